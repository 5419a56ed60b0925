//! Open-set identification: accept a query if some group code is close
//! enough, and report which group it landed in.

use gmv::eval::{dir_metric, identify_open_set};
use gmv::prelude::*;

fn main() -> gmv::Result<()> {
    let (d, n, m) = (128, 256, 4);
    let (templates, queries) = gen_synthetic(d, n, 0.48, n, 5)?;
    let partition = partition_groups(n, m, 6)?;
    let params = AoeParams { code_len: 115, sparsity: 81, xi: 1.0, max_iters: 100, rel_tol: 1e-6, seed: 7 };
    let model = GroupModel::from_aoe(learn_aoe(&templates, &partition, &params)?, partition, &params)?;

    let eval = evaluate(&model, &templates, &queries, 0.05)?;
    let id = &eval.identification;
    println!("threshold τ = {:.3} (5% of impostors pass)", id.threshold);
    println!("P_fn step 1 = {:.4}, P_ε = {:.4}, DIR = {:.4}", id.pfn_step1, id.p_epsilon, id.dir);
    assert_eq!(id.dir, dir_metric(id.p_epsilon, id.pfn_step1)?);

    for (i, label) in queries.labels().iter().enumerate().step_by(64) {
        let code = model.embed(&queries.column(i))?;
        let decision = identify_open_set(&code, &model, id.threshold)?;
        let truth = match label {
            QueryLabel::Genuine(id) => format!("group {}", model.partition().group_of(*id as usize)),
            QueryLabel::Impostor => "impostor".to_string(),
        };
        println!(
            "query {i:3} ({truth:>9}): accepted={} group={:?} distance={:.2}",
            decision.accepted, decision.group, decision.min_distance
        );
    }
    Ok(())
}
