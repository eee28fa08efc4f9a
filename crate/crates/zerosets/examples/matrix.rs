//! Contour-integral Sylvester solve against the eigenbasis solve.
use zerosets::matrix::{self, ContourSpec};
use zerosets::num;

fn main() -> zerosets::Result<()> {
    let mut rng = num::rng(1);
    for cond in [1e0, 1e3, 1e6] {
        let m = matrix::random_hpd(&mut rng, 4, cond);
        let cm = matrix::random_herm(&mut rng, 4);
        let direct = matrix::sylvester_direct(&m, &cm);
        let contour = matrix::sylvester_contour(&m, &cm, &ContourSpec::relative(&m, 0.25)?)?;
        let rel = num::frobenius(&(contour - &direct)) / num::frobenius(&direct);
        println!("cond {cond:.0e}: relative difference {rel:.2e}");
    }
    Ok(())
}
