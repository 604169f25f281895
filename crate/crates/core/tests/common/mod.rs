#![allow(dead_code)]

pub mod corpus;
pub mod faults;
pub mod oracle;
