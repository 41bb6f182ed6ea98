//! Toolkit for building and scoring document-to-table extraction benchmarks.
//!
//! The workflow has three halves that share one data model:
//!
//! * [`synthesis`] turns a ground-truth table plus schema into a natural
//!   language document through a staged agent pipeline (annotate cells,
//!   synthesize inverse evidence, plan sections, write, assemble), with
//!   deterministic checkers between every LLM stage.
//! * [`extraction`] runs a candidate model over a synthesized document and
//!   parses its output back into a table.
//! * [`eval`] aligns predicted rows against the ground truth with bipartite
//!   matching and reports cell-level precision/recall/F1 plus per-capability
//!   solve rates.
//!
//! All LLM traffic goes through [`gateway`], which supports a real HTTP
//! chat-completions backend and a scripted transcript backend so every
//! pipeline can run offline and byte-for-byte reproducibly.

pub mod bundle;
pub mod cli;
pub mod config;
pub mod eval;
pub mod extraction;
pub mod gateway;
pub mod model;
pub mod prompts;
pub mod synthesis;
