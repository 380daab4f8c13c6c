use std::collections::HashMap;
use std::sync::RwLock;

#[derive(Debug, Default)]
pub struct Bar {
    pub hits: u32,
}

impl Bar {
    pub fn new() -> Self {
        Bar { hits: 0 }
    }
}

struct Foo {
  map: RwLock<HashMap<String, Bar>>
}

impl Foo {
  pub fn get(&self, key: String) -> &Bar {
    self.map.write().unwrap().entry(key).or_insert(Bar::new())
  }
}
