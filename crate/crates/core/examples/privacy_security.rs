//! What a curious server can rebuild: reconstruction error of queries
//! (privacy) and of enrolled members (security) as the code gets denser.

use gmv::prelude::*;

fn main() -> gmv::Result<()> {
    gmv::init_threads_from_env();
    println!("S/ℓ    S   MSE_P    MSE_S    P_fn@0.05");
    for k in 1..=10 {
        let s_ratio = k as f64 / 10.0;
        let cfg = ExperimentConfig { m: 32, s_ratio, ..Default::default() };
        let r = run_experiment(&cfg)?;
        println!(
            "{s_ratio:.1}  {:4}  {:.5}  {:.5}  {:.4}",
            r.data.sparsity, r.security.mse_privacy, r.security.mse_security, r.verification.pfn_at_pfp
        );
    }
    Ok(())
}
