//! Sparse ternary codes: ternarize a vector, embed a template through a
//! random orthonormal projection and see how much of it a code gives back.

use gmv::eval::reconstruction_error;
use gmv::prelude::*;
use gmv::procrustes::random_orthonormal;

fn main() -> gmv::Result<()> {
    let code = ternarize(&[0.3, -1.2, 0.05, 0.9, -0.4], 2)?;
    println!("T_2([0.3, -1.2, 0.05, 0.9, -0.4]) = {:?}", code.values());

    let (d, l) = (128, 115);
    let (templates, _) = gen_synthetic(d, 1, 0.0, 0, 7)?;
    let x = templates.column(0).clone_owned();
    let w = random_orthonormal(d, l, 11)?;

    println!("\n   S   nnz   ‖x − x̂‖²/d");
    for s in [8, 16, 32, 64, 81, 115] {
        let e = embed(&x, &w, s)?;
        let x_hat = reconstruct_unit(&e, &w)?;
        println!("{s:4}  {:4}   {:.5}", e.nnz(), reconstruction_error(&x, &x_hat));
    }
    Ok(())
}
