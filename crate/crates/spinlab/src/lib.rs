//! Workbench for studying how learned thermometers behave across the phase
//! diagram of the two-dimensional Ising model.
//!
//! Module map:
//!
//! - [`lattice`]: the spin model, Metropolis/Wolff Monte Carlo, and labeled
//!   dataset generation.
//! - [`mlp`]: small multilayer perceptrons trained with Adam to regress the
//!   sampling temperature from a raw configuration.
//! - [`evolve`]: evolutionary search over network architectures.
//! - [`coverage`]: neuron-coverage metrics over trained networks.
//! - [`analysis`]: per-temperature error statistics, correlations, and
//!   histograms.
//! - [`pipeline`]: configuration, dataset splitting, and the end-to-end
//!   orchestration behind the command-line tool.
//! - [`seeds`]: deterministic seed derivation shared by every stage.
//!
//! The `book/` directory of the repository holds a longer guide; its code
//! blocks compile and run as this crate's doc-tests (see the `book` module
//! at the bottom of `lib.rs`), so the guide cannot drift from the API.

pub mod analysis;
pub mod coverage;
pub mod evolve;
pub mod lattice;
pub mod mlp;
pub mod pipeline;
pub mod seeds;

/// Every code block in the guide runs as a doc-test of this crate, keeping
/// the prose honest. Each chapter becomes one hidden item here.
#[cfg(doctest)]
mod book {
    macro_rules! chapter {
        ($name:ident, $path:literal) => {
            #[doc = include_str!(concat!("../../../book/src/", $path))]
            pub struct $name;
        };
    }

    chapter!(Introduction, "introduction.md");
    chapter!(Sampling, "sampling.md");
    chapter!(Networks, "networks.md");
    chapter!(Evolution, "evolution.md");
    chapter!(Coverage, "coverage.md");
    chapter!(Analysis, "analysis.md");
    chapter!(Pipeline, "pipeline.md");
}
