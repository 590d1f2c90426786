pub mod assemble;
pub mod expr;
pub mod floquet;
pub mod fredholm;
pub mod functions;
pub mod graph;
pub mod mellin;
pub mod opspec;
pub mod quad;
pub mod sio;
