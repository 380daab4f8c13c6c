pub fn values() -> (i32, u64) {
    let a: i32 = 1;
    let b = 2u64 * 2;
    (a, b)
}
