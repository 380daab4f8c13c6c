pub fn twice(s: String) -> (String, String) {
    let a = s;
    (a, s)
}
