pub fn five() -> i32 {
    let x = 5
    x
}
