//! Learned enrollment against the fixed-rule baselines at a few group sizes,
//! averaged over seeds.

use gmv::prelude::*;

fn main() -> gmv::Result<()> {
    gmv::init_threads_from_env();
    let seeds = 3;
    println!("  m  method          P_fn@0.05    AUC");
    for m in [4, 8, 16] {
        for method in Method::ALL {
            let (mut pfn, mut auc) = (0.0, 0.0);
            for seed in 0..seeds {
                let cfg = ExperimentConfig { method, m, seed, ..Default::default() };
                let r = run_experiment(&cfg)?;
                pfn += r.verification.pfn_at_pfp / seeds as f64;
                auc += r.verification.auc / seeds as f64;
            }
            println!("{m:3}  {:<14}  {pfn:9.4}  {auc:.4}", method.name());
        }
    }
    Ok(())
}
