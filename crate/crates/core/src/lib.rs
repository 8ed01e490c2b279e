//! Event-to-sentence realization.
//!
//! Abstract story events ⟨subject, verb, object, preposition, modifier⟩ are
//! turned into sentences by a cascade of realizers (retrieve-and-edit,
//! templates, Monte Carlo beam search, FSM-constrained beam search, plain beam
//! search), then slot-filled into surface text.

pub mod decoders;
pub mod ensemble;
pub mod event;
pub mod eventify;
pub mod lexicon;
pub mod memory;
pub mod metrics;
pub mod pipeline;
pub mod retedit;
pub mod seq_model;
pub mod slotfill;
pub mod templater;

pub use event::{EventTuple, GeneralToken, Slot, TokenKind};
pub use lexicon::Lexicon;
pub use memory::StoryMemory;
