pub fn total() -> u64 {
    let a: u64 = 1;
    let b = 2u64 * 2;
    let c = a + b;
    c
}
