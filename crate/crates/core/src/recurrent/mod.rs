//! LSTM cell, uni- and bidirectional encoders, the late-fusion sigmoid head
//! and per-word introspection.

mod lstm;
mod model;

pub use lstm::{encode_bidirectional, encode_forward, lstm_cell, LstmParams, LstmState, GATES};
pub use model::{
    Introspection, RecurrentConfig, RecurrentKind, RecurrentModel, WordContribution, EMBEDDING, HEAD_B,
    HEAD_W,
};
