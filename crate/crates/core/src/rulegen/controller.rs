use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use ipnet::IpNet;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{FlowRule, RuleSet};
use crate::topology::NodeId;

/// One REST call a controller client would issue.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControllerRequest {
    pub method: String,
    pub path: String,
    pub body: Value,
}

fn ethertype(net: &IpNet) -> u32 {
    match net {
        IpNet::V4(_) => 0x0800,
        IpNet::V6(_) => 0x86dd,
    }
}

fn address_keys(net: &IpNet) -> (&'static str, &'static str) {
    match net {
        IpNet::V4(_) => ("ipv4-source", "ipv4-destination"),
        IpNet::V6(_) => ("ipv6-source", "ipv6-destination"),
    }
}

/// OpenDaylight-style flow table body for `node`. Priority grows with the
/// source prefix length so the switch does the same longest match as
/// [`RuleTable`](super::RuleTable).
pub fn odl_flow_payload(node: NodeId, rules: &[FlowRule]) -> ControllerRequest {
    let flows: Vec<Value> = rules
        .iter()
        .filter(|r| r.node == node)
        .enumerate()
        .map(|(i, r)| {
            let (sk, dk) = address_keys(&r.matches.src);
            json!({
                "id": format!("c{}-p{}-{}", r.class, r.path, i),
                "table_id": 0,
                "priority": 100 + r.matches.src.prefix_len() as u32,
                "match": {
                    "ethernet-match": { "ethernet-type": { "type": ethertype(&r.matches.src) } },
                    (sk): r.matches.src.to_string(),
                    (dk): r.matches.dst.to_string(),
                },
                "instructions": { "instruction": [{
                    "order": 0,
                    "apply-actions": { "action": [{
                        "order": 0,
                        "output-action": { "output-node-connector": format!("openflow:{node}:to-{}", r.action.forward) },
                    }]},
                }]},
            })
        })
        .collect();
    ControllerRequest {
        method: "PUT".into(),
        path: format!("/restconf/config/opendaylight-inventory:nodes/node/openflow:{node}/table/0"),
        body: json!({ "flow-node-inventory:table": [{ "id": 0, "flow-node-inventory:flow": flows }] }),
    }
}

/// Stands in for a controller by writing each request to
/// `out_dir/controller/node-{id}.json` plus a `manifest.json` listing them.
#[derive(Clone, Debug)]
pub struct MockController {
    pub out_dir: PathBuf,
}

impl MockController {
    pub fn new(out_dir: impl AsRef<Path>) -> Self {
        MockController { out_dir: out_dir.as_ref().to_path_buf() }
    }

    /// Writes one request per node that has rules; returns them in node order.
    pub fn push(&self, rules: &RuleSet) -> io::Result<Vec<ControllerRequest>> {
        let dir = self.out_dir.join("controller");
        fs::create_dir_all(&dir)?;
        let mut nodes: Vec<NodeId> = rules.rules.iter().map(|r| r.node).collect();
        nodes.sort_unstable();
        nodes.dedup();
        let mut sent = Vec::with_capacity(nodes.len());
        let mut manifest = BTreeMap::new();
        for n in nodes {
            let req = odl_flow_payload(n, &rules.rules);
            let file = format!("node-{n}.json");
            fs::write(dir.join(&file), serde_json::to_string_pretty(&req)?)?;
            manifest.insert(n, json!({ "file": file, "method": req.method, "path": req.path }));
            sent.push(req);
        }
        fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
        Ok(sent)
    }
}
