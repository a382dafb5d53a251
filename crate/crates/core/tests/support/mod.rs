#![allow(dead_code)]

pub mod bleu_pairs;
pub mod pilot;
