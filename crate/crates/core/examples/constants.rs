//! Structural constants: C_n, the mobility c0 and the velocity constant μ.

use pnflow::fracops::compute_cn;
use pnflow::LayerProfile;

fn main() -> pnflow::Result<()> {
    for n in 1..=3 {
        println!("C_{n} = {:.14}", compute_cn(n)?);
    }
    let profile = LayerProfile::tabulate_exact(200.0, 2001)?;
    println!("c0 = {:.10}", profile.c0());
    println!("mu = {:.10}", profile.mu(2));
    Ok(())
}
