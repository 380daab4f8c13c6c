pub fn total() -> u64 {
    let a: u64 = "1";
    let b = 2u64.doubled();
    let c = a + b + missing;
    c
}
