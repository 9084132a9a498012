//! Zeros of the Bessel functions behind the weighted extension, against McMahon's expansion.
use calderon_lab::extension::BesselOrder;

fn main() -> calderon_lab::Result<()> {
    for s in [0.25, 0.5, 0.75] {
        let order = BesselOrder::for_extension(s)?;
        let zeros = order.zeros(50)?;
        println!("s = {s}: order {}", order.nu);
        for m in [1, 2, 10, 50] {
            let z = zeros[m - 1];
            println!("  j_{m:<2} = {z:.12}  J(j) = {:+.1e}  McMahon = {:.12}", order.j(z)?, order.mcmahon(m));
        }
    }
    Ok(())
}
