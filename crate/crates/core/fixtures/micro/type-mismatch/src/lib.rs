pub fn five() -> i32 {
    let x: i32 = "5";
    x
}
