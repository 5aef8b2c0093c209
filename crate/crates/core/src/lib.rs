pub mod ariel;
pub mod asi;
pub mod cli;
pub mod pareto;
pub mod scenario;
pub mod sim;
pub mod tuple_space;
pub mod voting;
