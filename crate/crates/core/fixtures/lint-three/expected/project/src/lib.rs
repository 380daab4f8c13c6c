pub fn double(x: i32) -> i32 {
    x * 2
}

pub fn nothing_in(items: &[u8]) -> bool {
    items.is_empty()
}

pub fn label(flag: bool) -> &'static str {
    if flag {
        "on"
    } else {
        "off"
    }
}
