pub fn show<T>(t: T) -> String {
    format!("<{}>", t)
}
