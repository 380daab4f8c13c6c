pub fn answer() -> i32 {
    let x: i32 = "42";
    x
}
