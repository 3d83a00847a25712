//! Data curation and evaluation toolkit for LLM code translation.
//!
//! The crate mines aligned code pairs from competitive-programming corpora,
//! validates them behaviourally in a local execution sandbox, builds
//! instruction-tuning and style-preference datasets, and evaluates translation
//! output by Computational Accuracy and code-style similarity.
//!
//! Module map:
//!
//! * [`corpus`] — problem/snippet data model, JSONL I/O, dataset schemas.
//! * [`prompt`] — placeholder templates for every LLM interaction.
//! * [`gateway`] — LLM access trait plus deterministic mock and HTTP backends.
//! * [`pairing`] — embedding recall and expectation-scored LLM judging.
//! * [`sandbox`] — compile/run isolation, output comparison, differential tests.
//! * [`styledist`] — syntax-level style distances (CSSim) and tree edit distance.
//! * [`styleforge`] — style-positive/negative training-set construction.
//! * [`losses`] — reference implementations of the training losses.
//! * [`config`] — TOML + environment configuration.
//! * [`pipeline`] — end-to-end commands shared by the CLI and tests.
//! * [`demo`] — self-contained offline demo data generator.

pub mod config;
pub mod corpus;
pub mod demo;
pub mod gateway;
pub mod losses;
pub mod pairing;
pub mod pipeline;
pub mod prompt;
pub mod sandbox;
pub mod styledist;
pub mod styleforge;

pub(crate) mod util;
