//! Parse and evaluate coefficient expressions.

use bdsvie::expr::{evaluate_coefficient, parse_expression, Dims, Slot};

fn main() {
    let dims = Dims { k: 1, d: 2, l: 1 };
    let f = parse_expression("0.5*sin(y1 + z12) - t*s", Slot::F, dims).expect("valid expression");
    println!("f = {f}");
    println!("f(0.25, 0.5, y=1, z=(0, 2)) = {:.6}", evaluate_coefficient(&f, 0.25, 0.5, &[1.0], &[0.0, 2.0]).unwrap());
    println!("state dependent: {}", f.depends_on_state());

    for (text, slot) in [("sin(wT)", Slot::F), ("y1 +* 2", Slot::F), ("max(wT1, 0)", Slot::Xi), ("foo(1)", Slot::G)] {
        match parse_expression(text, slot, dims) {
            Ok(ast) => println!("{slot}: {text:?} -> {ast}"),
            Err(e) => println!("{slot}: {text:?} -> error: {e}"),
        }
    }
}
