pub mod surface;
pub mod syntax;
pub mod typecheck;
pub mod translate;
pub mod models;
pub mod rewrite;
pub mod effects;
pub mod gen;
pub mod axioms;
