//! Path-based network optimization: topologies, traffic, candidate paths,
//! constraint templates, forwarding rules and ready-made applications.

pub mod topology;
pub mod traffic;
pub mod pathgen;
pub mod optmodel;
pub mod rulegen;
pub mod apps;
