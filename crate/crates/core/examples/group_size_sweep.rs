//! Packing more members into a group: sweep m and print the plot table.

use gmv::experiment::{sweep, sweep_table, SweepAxis};
use gmv::prelude::*;

fn main() -> gmv::Result<()> {
    gmv::init_threads_from_env();
    for method in [Method::Aoe, Method::Eoa] {
        let base = ExperimentConfig { method, ..Default::default() };
        let points = sweep(&base, SweepAxis::M, &[1.0, 2.0, 4.0, 8.0, 16.0, 32.0])?;
        println!("# {method}");
        print!("{}", sweep_table(SweepAxis::M, &points));
    }
    Ok(())
}
