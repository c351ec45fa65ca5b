pub mod algebra;
pub mod syntax;
pub mod words;
pub mod boundary;
pub mod semantics;
pub mod sorting_tree;
pub mod collapse;
pub mod harness;
