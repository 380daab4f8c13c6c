pub fn values() -> (i32, u64) {
    let a: i32 = "one";
    let b = 2u64.doubled();
    (a, b)
}
