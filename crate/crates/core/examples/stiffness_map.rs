//! Stiffness spectra over a joint grid of the planar arm, evaluated in
//! parallel and printed as CSV.

use vjmstiff::cli::{self, ChainSource, Format, GridRange, RunConfig};
use vjmstiff::*;

fn main() -> Result<()> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/examples/chains/planar_2r.json");
    let mut cfg = RunConfig::new(ChainSource::File(path.into()));
    cfg.format = Format::Csv;
    let ranges = ["q1:0:1.2:4", "q2:0.2:2.2:5", "y:0.002:0.002:1"]
        .iter()
        .map(|s| s.parse())
        .collect::<Result<Vec<GridRange>>>()?;
    let points = cli::grid_points(&[0.0, 0.0], &ranges)?;
    let (_, csv) = cli::cmd_map(&cfg, &points, &Twist6::new(0.0, 1.0, 0.0, 0.0, 0.0, 0.0))?;
    print!("{csv}");
    Ok(())
}
