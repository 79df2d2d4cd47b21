//! Running programs and completions: sandboxed test execution, program
//! assembly, model endpoints and the evaluation record store.

pub mod sandbox;
pub mod assemble;
pub mod endpoint;
pub mod evaluate;
pub mod store;

pub use assemble::assemble_program;
pub use endpoint::{EndpointError, EndpointKind, ModelEndpoint, Side};
pub use evaluate::{attribution, evaluate, CompletionRecord, EvalError, EvalOutcome, EvalSettings};
pub use sandbox::{ExecutionResult, Sandbox, SandboxPolicy, Status};
pub use store::{Keyed, RecordStore, StoreError};
