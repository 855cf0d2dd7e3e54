//! Tamarin back-end: compiles a [`ProtocolSpec`](crate::model::ProtocolSpec)
//! into a multiset-rewriting theory and renders it as `.spthy` text.
//!
//! Layout of a generated theory:
//!
//! * `Register_pk_<R>` for every role with an asymmetric key,
//! * `Init_<R>` binding a thread id and long-term material into `St_<R>_0`,
//! * `<R>_send_<i>` / `<R>_recv_<i>` for every message, threaded through
//!   `St_<R>_<k>` state facts,
//! * an `executable` lemma plus one lemma per goal.

mod ast;
mod compile;
mod names;

pub use ast::{
    render_theory, Fact, Lemma, LemmaKind, Restriction, TTerm, TamarinRule, TamarinTheory, VarSort,
};
pub use compile::{builtin_name, compile_tamarin, gen_lemmas, Compiled};
