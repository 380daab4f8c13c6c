pub fn ratio() -> f64 {
    let x: f64 = 1;
    x / 2.0
}
