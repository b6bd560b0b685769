#![allow(dead_code)]

pub mod gp;
pub mod lrua;
