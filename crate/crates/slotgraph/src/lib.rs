//! Graph-regularized semi-supervised training of linear-chain CRFs for
//! slot-filling sequence labeling.
//!
//! The pipeline has four stages:
//!
//! 1. **Supervised CRF** ([`crf`], [`optimizer`]): a linear-chain model with
//!    a compact `[0, +2]` feature window, trained by L-BFGS on the penalized
//!    negative log-likelihood.
//! 2. **Similarity graph** ([`graph`]): trigram types become nodes, described
//!    by PMI vectors over their five-word context features and connected by
//!    a symmetrized cosine k-NN graph.
//! 3. **Label propagation** ([`propagation`]): modified-adsorption smoothing
//!    of per-trigram label distributions over the graph.
//! 4. **Semi-supervised loop** ([`ssl`]): CRF marginals seed the graph,
//!    propagated distributions steer a constrained Viterbi decode of the
//!    unlabeled data, and the model is retrained on the union — repeated
//!    until the decoded labels stabilize.
//!
//! [`corpus`] handles data ingestion and synthetic corpus generation, and
//! [`eval`] implements slot/value F-scores plus the multi-run experiment
//! protocol. The `slotgraph` CLI (separate crate) wraps all of it for batch
//! use.
//!
//! The accompanying mdbook under `book/` walks through each concept with
//! runnable examples; its code blocks are compiled as doc-tests of this
//! crate.

pub mod corpus;
pub mod crf;
pub mod error;
pub mod eval;
pub mod graph;
pub mod optimizer;
pub mod propagation;
pub mod ssl;

pub use error::{Error, ErrorCategory, Result};

// Compile the book's code snippets as doc-tests so the guide can never
// drift from the API.
#[cfg(doctest)]
mod book {
    macro_rules! chapter {
        ($name:ident, $path:literal) => {
            #[doc = include_str!($path)]
            mod $name {}
        };
    }

    chapter!(corpus, "../../../book/src/corpus.md");
    chapter!(crf, "../../../book/src/crf.md");
    chapter!(training, "../../../book/src/training.md");
    chapter!(graph, "../../../book/src/graph.md");
    chapter!(propagation, "../../../book/src/propagation.md");
    chapter!(ssl, "../../../book/src/ssl.md");
    chapter!(evaluation, "../../../book/src/evaluation.md");
}
