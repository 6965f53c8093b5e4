//! Verifies every hand-written backward pass against centred finite
//! differences, then the whole miniature network end to end.
//!
//! ```text
//! cargo run --release --example gradient_check
//! ```

use swrnn::diagnostics::{miniature_dims, model_gradient_check, op_gradient_suite, FD_STEP};

fn main() {
    println!("centred differences with step {FD_STEP}\n");
    println!("{:<12} {:<11} {:>8} {:>14}", "op", "w.r.t.", "coords", "max rel err");
    for c in op_gradient_suite(1) {
        println!("{:<12} {:<11} {:>8} {:>14.3e}", c.op, c.wrt, c.checked, c.max_rel_error);
    }
    let d = miniature_dims();
    let r = model_gradient_check(8);
    println!(
        "\nminiature network (N_t={}, {} OD pairs, {} airports, {} hidden units): {} parameters, max rel err {:.3e}",
        d.n_t, d.n_od, d.n_ap, d.hidden_od, r.checked, r.max_rel_error
    );
}
