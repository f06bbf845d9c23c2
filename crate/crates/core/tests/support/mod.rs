#![allow(dead_code)]

pub mod soundness;
