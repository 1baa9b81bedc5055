pub mod cli;
pub mod commands;
pub mod fixtures;
pub mod inference;
pub mod service;
pub mod store;
