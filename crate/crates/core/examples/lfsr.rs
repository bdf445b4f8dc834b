//! LFSR pattern streams and their period.

use socbist::fault_lab::{lfsr_sequence, primitive_polynomial, Lfsr};

fn main() {
    for width in [3u32, 5, 8, 16] {
        let poly = primitive_polynomial(width).expect("table covers the width");
        let mut l = Lfsr::with_width(width, 1).unwrap();
        let mut period = 0u64;
        loop {
            l.step();
            period += 1;
            if l.state() == 1 {
                break;
            }
        }
        println!("width {width:>2}  polynomial {poly:#x}  period {period}");
    }
    let l = Lfsr::new(0x25, 1).unwrap();
    for p in lfsr_sequence(&l, 8, 5) {
        println!("{}", p.to_hex());
    }
}
