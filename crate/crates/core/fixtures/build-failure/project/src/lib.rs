pub fn count() -> u32 {
    let n: u32 = "five";
    n + 1
}
