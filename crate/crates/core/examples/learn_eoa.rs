//! Embedding of aggregation: learn one aggregate vector per group and the
//! projection that sparsifies it.

use gmv::prelude::*;

fn main() -> gmv::Result<()> {
    gmv::init_threads_from_env();
    let (d, n, m) = (128, 512, 8);
    let (templates, queries) = gen_synthetic(d, n, 0.48, n, 1)?;
    let partition = partition_groups(n, m, 2)?;
    let params = EoaParams {
        code_len: 115,
        sparsity: 81,
        gamma: 1e4,
        eta: 1.0,
        max_iters: 100,
        rel_tol: 1e-6,
        seed: 3,
    };

    let state = learn_eoa(&templates, &partition, &params)?;
    println!("objective per sweep: {:?}", state.objective_trace);

    // how well each aggregate still "matches" its members
    let mut worst: f64 = 0.0;
    for (g, members) in partition.groups().iter().enumerate() {
        let a = state.aggregates.column(g);
        for &i in members {
            worst = worst.max((templates.column(i).dot(&a) - 1.0).abs());
        }
    }
    println!("max |x_iᵀa_g − 1| = {worst:.4}");

    let model = GroupModel::from_eoa(state, partition, &params)?;
    let eval = evaluate(&model, &templates, &queries, 0.05)?;
    println!("AUC {:.4}, P_fn at P_fp=0.05 {:.4}", eval.verification.auc, eval.verification.pfn_at_pfp);
    Ok(())
}
