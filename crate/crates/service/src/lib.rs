//! HTTP session service for interactive refinement with stroke messages.
//!
//! | method | path | |
//! |---|---|---|
//! | POST | `/sessions` | multipart `image` (PNG/PPM) and optional `config` (JSON) |
//! | GET | `/sessions/{id}` | config, messages, previews, diagnostics |
//! | POST | `/sessions/{id}/strokes` | `{"strokes": [{"kind": "constraint", "pixels": [[x, y], ...]}]}` |
//! | POST | `/sessions/{id}/undo` | drop the last message |
//! | GET | `/sessions/{id}/preview/{j,t,b,weights}.png` | PNG previews |
//!
//! A submission forms one message from the union of its constraint strokes.
//! Its target is the mean refined transmission under the picker stroke when
//! there is one, otherwise the largest lower bound under the constraint.
//! Transmission previews use the ramp `(t, 0, 1 - t)`, blue for 0 and red for 1.

pub mod api;
pub mod preview;
pub mod session;
pub mod store;

pub use api::router;
pub use session::{RecordedMessage, Session, Stroke, StrokeKind, TargetSource};
pub use store::{ServiceConfig, SessionStore};
