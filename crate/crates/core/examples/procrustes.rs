//! Orthogonal Procrustes: the column-orthonormal W maximizing trace(Wᵀ C),
//! compared against random orthonormal candidates.

use gmv::procrustes::{gaussian_matrix, orthogonal_procrustes, random_orthonormal};

fn main() -> gmv::Result<()> {
    let (d, l) = (16, 12);
    let cross = gaussian_matrix(d, l, 1);
    let w = orthogonal_procrustes(&cross)?;
    let best = w.matrix().tr_mul(&cross).trace();
    let nuclear: f64 = cross.singular_values().iter().sum();
    println!("trace(Wᵀ C) = {best:.6}");
    println!("nuclear norm = {nuclear:.6}");
    println!("‖WᵀW − I‖_F = {:.2e}", w.orthonormality_error());

    let mut closest = f64::NEG_INFINITY;
    for seed in 0..1000 {
        let q = random_orthonormal(d, l, 100 + seed)?;
        closest = closest.max(q.matrix().tr_mul(&cross).trace());
    }
    println!("best of 1000 random candidates = {closest:.6}");
    Ok(())
}
