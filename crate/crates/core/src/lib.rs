//! Two-wizard Wizard-of-Oz experiment platform for human-robot dialogue.
//!
//! A participant talks only to the dialogue-manager wizard (DM); the DM
//! relays constrained movement orders to the robot-navigator wizard (RN),
//! who drives a simulated robot. The session server enforces that topology,
//! sequences and logs every message, and can replay a log deterministically.

pub mod protocol;
pub mod sim;
pub mod command;
pub mod guidelines;
pub mod session;
pub mod corpus;
pub mod bot;
