//! Aggregation of embeddings: learn W, the member embeddings and the group
//! codes jointly, then verify queries against the enrolled groups.

use gmv::prelude::*;

fn main() -> gmv::Result<()> {
    gmv::init_threads_from_env();
    let (d, n, m) = (128, 512, 8);
    let (templates, queries) = gen_synthetic(d, n, 0.48, n, 1)?;
    let partition = partition_groups(n, m, 2)?;
    let params = AoeParams { code_len: 115, sparsity: 81, xi: 1.0, max_iters: 100, rel_tol: 1e-6, seed: 3 };

    let state = learn_aoe(&templates, &partition, &params)?;
    println!("objective per sweep:");
    for (t, v) in state.objective_trace.iter().enumerate() {
        println!("  {t:3}  {v:.4}");
    }
    println!("converged: {}, violations: {}", state.convergence.converged, state.convergence.violations);

    let model = GroupModel::from_aoe(state, partition, &params)?;
    let eval = evaluate(&model, &templates, &queries, 0.05)?;
    println!("AUC {:.4}, P_fn at P_fp=0.05 {:.4}", eval.verification.auc, eval.verification.pfn_at_pfp);
    println!("DIR {:.4}", eval.identification.dir);
    Ok(())
}
