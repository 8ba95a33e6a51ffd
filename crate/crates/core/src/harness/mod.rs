//! Experiment configuration, recipes, export and batch runs.

pub mod cli;
pub mod config;
pub mod export;
pub mod recipes;
pub mod run;

pub use config::{Algorithm, Init, ParamSpec, Record, RunConfig};
pub use export::{export_trajectory, import_csv, Format, TrajectoryTable};
pub use recipes::{run_recipe, Recipe, RecipeOpts, RecipeReport, RECIPES};
pub use run::{run_batch, run_config, write_summary, RunResult, Sink};
