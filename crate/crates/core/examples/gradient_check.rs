//! Compare analytic gradients of the full model against central finite
//! differences.
//!
//! cargo run --example gradient_check

use procembed::heads::gradcheck::gradient_check;

fn main() -> procembed::Result<()> {
    for max_dim in [2, 4, 8] {
        let r = gradient_check(max_dim, 1, 30)?;
        println!(
            "dim <= {max_dim}: {} configurations, {} coordinates, max relative error {:.2e}",
            r.configurations, r.coordinates, r.max_relative_error
        );
    }
    Ok(())
}
