//! Sessions, subject flows, the event log, exports, the lottery and the HTTP
//! front end.

pub mod events;
pub mod export;
pub mod flow;
pub mod http;
pub mod log;
pub mod lottery;
pub mod service;

pub use events::{Clock, EventKind, EventRecord, LogicalClock, SystemClock};
pub use export::{export_dataset, ExportError, ExportTables, CERTAINTY_FILE, DISCOUNT_FILE, TRUST_FILE};
pub use flow::{advance_stage, Actor, FlowContext, FlowError, Stage, Submission, SubjectFlow, WaitDelay};
pub use log::{read_log_dir, EventSink, JsonlSink, LogError};
pub use lottery::{draw_lottery, LotteryDraw, LotteryEntry, LotteryError};
pub use service::{
    assign_treatment, ExperimentService, ExportSummary, OperatorConfig, ServiceConfig, ServiceError, Session,
    SessionState, SubjectView,
};
