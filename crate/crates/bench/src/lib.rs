//! Shared inputs for the estimator benchmarks.

use lcd_core::sim::{KnockoutPanel, PanelParams};
use lcd_core::{JciDataset, Result};

/// A simulated knockout panel with `p` genes, pooled into a dataset.
pub fn panel_dataset(p: usize, interventions: usize, n_obs: usize, seed: u64) -> Result<JciDataset> {
    let params = PanelParams { p, interventions, ..PanelParams::default() };
    let table = KnockoutPanel::random(&params, seed)?.table(n_obs, seed)?;
    JciDataset::from_table(&table)
}
