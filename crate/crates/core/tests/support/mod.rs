pub mod exhaustive;
pub mod cylinder;
