pub fn first(v: &[i32]) -> Option<i32, i32> {
    v.first().copied()
}
