//! Regenerates the power-of-two entries of `assets/moduli.txt`.
//!
//! Usage: `gen_moduli [max_log2]` (default 16).

use std::time::Instant;

use wiretap_core::galois::search_low_weight;

fn main() {
    let max: u32 = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(16);
    for k in 6..=max {
        let n = 1usize << k;
        let t = Instant::now();
        match search_low_weight(n) {
            Some(exps) => {
                let line: Vec<String> = exps.iter().map(|e| e.to_string()).collect();
                println!("{}", line.join(" "));
                eprintln!("n = {n}: {:.1}s", t.elapsed().as_secs_f64());
            }
            None => eprintln!("n = {n}: none found"),
        }
    }
}
