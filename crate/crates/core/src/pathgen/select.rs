use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{AnnotatedPath, PathError, PathSet};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SelectStrategy {
    /// Fewest hops first, ties broken by the node sequence.
    Shortest,
    /// Uniform sample without replacement, one RNG stream per class.
    Random,
}

impl FromStr for SelectStrategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "shortest" => Ok(SelectStrategy::Shortest),
            "random" => Ok(SelectStrategy::Random),
            other => Err(format!("unknown selection strategy {other:?} (expected shortest or random)")),
        }
    }
}

impl fmt::Display for SelectStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SelectStrategy::Shortest => "shortest",
            SelectStrategy::Random => "random",
        })
    }
}

/// Picks up to `n` paths per class from `all`.
///
/// Paths of `sticky` that are still in `all` are kept first; the strategy
/// fills the remaining slots. For `Random`, the stream of class `c` is
/// ChaCha8 seeded with `seed` on stream `c`, and the selection for `n` is a
/// prefix of the selection for `n + 1`. Output keeps the order of `all`.
pub fn select_paths(
    all: &PathSet,
    strategy: SelectStrategy,
    n: usize,
    seed: u64,
    sticky: Option<&PathSet>,
) -> Result<PathSet, PathError> {
    if n < 1 {
        return Err(PathError::BadParameter("select number must be at least 1".into()));
    }
    let mut out = PathSet::new();
    for (class, paths) in all.iter() {
        if paths.is_empty() {
            return Err(PathError::NoPaths(class));
        }
        let mut chosen: Vec<usize> = Vec::with_capacity(n.min(paths.len()));
        if let Some(prev) = sticky {
            let keep: HashSet<&AnnotatedPath> = prev.get(class).iter().collect();
            chosen.extend((0..paths.len()).filter(|&i| keep.contains(&paths[i])).take(n));
        }
        let taken: HashSet<usize> = chosen.iter().copied().collect();
        let mut rest: Vec<usize> = (0..paths.len()).filter(|i| !taken.contains(i)).collect();
        match strategy {
            SelectStrategy::Shortest => {
                rest.sort_by(|&a, &b| paths[a].hops().cmp(&paths[b].hops()).then_with(|| paths[a].cmp(&paths[b])));
            }
            SelectStrategy::Random => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(u64::from(class));
                rest.shuffle(&mut rng);
            }
        }
        let room = n.saturating_sub(chosen.len());
        chosen.extend(rest.into_iter().take(room));
        chosen.sort_unstable();
        out.insert(class, chosen.into_iter().map(|i| paths[i].clone()).collect());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(nodes: &[u32]) -> AnnotatedPath {
        AnnotatedPath::new(nodes.to_vec())
    }

    fn sample() -> PathSet {
        let mut ps = PathSet::new();
        ps.insert(0, vec![p(&[0, 3, 2, 1]), p(&[0, 1]), p(&[0, 2, 3, 1]), p(&[0, 2, 1])]);
        ps
    }

    #[test]
    fn shortest_breaks_ties_by_node_sequence() {
        let mut ps = PathSet::new();
        ps.insert(0, vec![p(&[0, 4, 1]), p(&[0, 1]), p(&[0, 2, 1])]);
        let sel = select_paths(&ps, SelectStrategy::Shortest, 2, 0, None).unwrap();
        assert_eq!(sel.get(0), &[p(&[0, 1]), p(&[0, 2, 1])]);
    }

    #[test]
    fn large_n_keeps_everything_in_order() {
        let all = sample();
        for s in [SelectStrategy::Shortest, SelectStrategy::Random] {
            assert_eq!(select_paths(&all, s, 10, 3, None).unwrap(), all);
        }
    }

    #[test]
    fn random_selection_is_nested_in_n() {
        let all = sample();
        let mut prev: Vec<AnnotatedPath> = Vec::new();
        for n in 1..=4 {
            let sel = select_paths(&all, SelectStrategy::Random, n, 11, None).unwrap();
            assert_eq!(sel.get(0).len(), n);
            assert!(prev.iter().all(|q| sel.get(0).contains(q)));
            prev = sel.get(0).to_vec();
        }
    }

    #[test]
    fn sticky_paths_survive_reselection() {
        let all = sample();
        let mut prev = PathSet::new();
        prev.insert(0, vec![p(&[0, 3, 2, 1]), p(&[9, 9])]);
        let sel = select_paths(&all, SelectStrategy::Shortest, 2, 0, Some(&prev)).unwrap();
        assert_eq!(sel.get(0), &[p(&[0, 3, 2, 1]), p(&[0, 1])]);
    }

    #[test]
    fn empty_class_is_named_in_the_error() {
        let mut all = sample();
        all.insert(5, vec![]);
        let err = select_paths(&all, SelectStrategy::Random, 2, 0, None).unwrap_err();
        assert!(matches!(err, PathError::NoPaths(5)));
        assert!(err.to_string().contains('5'));
    }
}
