pub mod adaquad;
pub mod audit;
pub mod certify;
pub mod config;
pub mod enclosure;
pub mod error;
pub mod expr;
pub mod interval;
pub mod network;
pub mod operator;
pub mod quadrature;
