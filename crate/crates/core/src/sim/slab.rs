/// Vec-backed arena with index reuse. Handles are `u32` so they fit in a
/// channel message.
#[derive(Debug, Clone)]
pub(crate) struct Slab<T> {
    items: Vec<Option<T>>,
    free: Vec<u32>,
    len: usize,
}

impl<T> Default for Slab<T> {
    fn default() -> Self {
        Slab {
            items: Vec::new(),
            free: Vec::new(),
            len: 0,
        }
    }
}

impl<T> Slab<T> {
    pub fn insert(&mut self, v: T) -> u32 {
        self.len += 1;
        match self.free.pop() {
            Some(i) => {
                self.items[i as usize] = Some(v);
                i
            }
            None => {
                self.items.push(Some(v));
                (self.items.len() - 1) as u32
            }
        }
    }

    pub fn remove(&mut self, h: u32) -> T {
        let v = self.items[h as usize].take().expect("stale slab handle");
        self.free.push(h);
        self.len -= 1;
        v
    }

    #[inline]
    pub fn get(&self, h: u32) -> &T {
        self.items[h as usize].as_ref().expect("stale slab handle")
    }

    #[inline]
    pub fn get_mut(&mut self, h: u32) -> &mut T {
        self.items[h as usize].as_mut().expect("stale slab handle")
    }

    pub fn len(&self) -> usize {
        self.len
    }
}
