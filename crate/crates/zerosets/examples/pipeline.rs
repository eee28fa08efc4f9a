//! End to end at the coarsest level: z1 on the ball in C^2.
use zerosets::pipeline::{self, PipelineConfig};

fn main() -> zerosets::Result<()> {
    let r = pipeline::run(&PipelineConfig { level: 0, ..Default::default() }, None)?;
    println!("Carleson norm {:.4}", r.carleson_norm);
    println!("residual {:.3e}, defect {:.3e}", r.residual, r.defect);
    println!("p* {:?}, Blaschke {:.6}", r.p_star(), r.blaschke.value);
    Ok(())
}
