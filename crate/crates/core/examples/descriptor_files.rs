//! Descriptor and model files: write templates and queries, enroll from the
//! files, store the model and evaluate the reloaded copy.

use gmv::experiment::{enroll, evaluate_model};
use gmv::io;
use gmv::prelude::*;

fn main() -> gmv::Result<()> {
    let dir = std::env::temp_dir().join(format!("gmv-example-{}", std::process::id()));
    std::fs::create_dir_all(&dir)?;
    let (x_path, q_path, m_path) = (dir.join("enrolled.gmvd"), dir.join("queries.gmvd"), dir.join("groups.gmvm"));

    let (templates, queries) = gen_synthetic(64, 128, 0.3, 128, 9)?;
    io::save_descriptors(&x_path, &templates)?;
    io::save_queries(&q_path, &queries)?;

    let cfg = ExperimentConfig { method: Method::Eoa, d: 64, n: 128, m: 4, ..Default::default() };
    let x = io::load_descriptors(&x_path)?;
    let partition = partition_groups(x.len(), cfg.m, cfg.partition_seed())?;
    let (model, _) = enroll(&cfg, &x, &partition)?;
    io::save_model(&m_path, &model)?;

    let reloaded = io::load_model(&m_path)?;
    println!(
        "{} groups, ℓ = {}, reloaded ‖WᵀW − I‖_F = {:.1e}",
        reloaded.num_groups(),
        reloaded.params().code_len,
        reloaded.w().orthonormality_error()
    );
    let q = io::load_queries(&q_path)?;
    let report = evaluate_model(&reloaded, &x, &q, 0.05, 0.95, 0.9)?;
    print!("{}", report.to_toml()?);

    std::fs::remove_dir_all(&dir)?;
    Ok(())
}
