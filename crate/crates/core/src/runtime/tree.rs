//! An arena-backed AVL tree keyed by `(key values, constraint number)` with
//! prefix range scans. Every key comparison is counted.

use std::cmp::Ordering;

use crate::value::Value;

use super::Cid;

const NIL: u32 = u32::MAX;

#[derive(Clone, Debug)]
struct Node {
    key: Box<[Value]>,
    cid: Cid,
    left: u32,
    right: u32,
    height: u8,
}

#[derive(Clone, Debug, Default)]
pub struct AvlTree {
    nodes: Vec<Node>,
    free: Vec<u32>,
    root: u32,
    len: usize,
}

fn cmp_prefix(prefix: &[Value], key: &[Value]) -> Ordering {
    prefix.iter().zip(key).map(|(a, b)| a.cmp(b)).find(|o| o.is_ne()).unwrap_or(Ordering::Equal)
}

impl AvlTree {
    pub fn new() -> Self {
        AvlTree {
            nodes: Vec::new(),
            free: Vec::new(),
            root: NIL,
            len: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    fn height(&self, n: u32) -> u8 {
        if n == NIL {
            0
        } else {
            self.nodes[n as usize].height
        }
    }

    fn update(&mut self, n: u32) {
        let (l, r) = (self.nodes[n as usize].left, self.nodes[n as usize].right);
        self.nodes[n as usize].height = 1 + self.height(l).max(self.height(r));
    }

    fn balance_factor(&self, n: u32) -> i16 {
        let node = &self.nodes[n as usize];
        self.height(node.left) as i16 - self.height(node.right) as i16
    }

    fn rotate_right(&mut self, n: u32) -> u32 {
        let l = self.nodes[n as usize].left;
        self.nodes[n as usize].left = self.nodes[l as usize].right;
        self.nodes[l as usize].right = n;
        self.update(n);
        self.update(l);
        l
    }

    fn rotate_left(&mut self, n: u32) -> u32 {
        let r = self.nodes[n as usize].right;
        self.nodes[n as usize].right = self.nodes[r as usize].left;
        self.nodes[r as usize].left = n;
        self.update(n);
        self.update(r);
        r
    }

    fn rebalance(&mut self, n: u32) -> u32 {
        self.update(n);
        let bf = self.balance_factor(n);
        if bf > 1 {
            let l = self.nodes[n as usize].left;
            if self.balance_factor(l) < 0 {
                self.nodes[n as usize].left = self.rotate_left(l);
            }
            self.rotate_right(n)
        } else if bf < -1 {
            let r = self.nodes[n as usize].right;
            if self.balance_factor(r) > 0 {
                self.nodes[n as usize].right = self.rotate_right(r);
            }
            self.rotate_left(n)
        } else {
            n
        }
    }

    fn alloc(&mut self, key: Box<[Value]>, cid: Cid) -> u32 {
        let node = Node {
            key,
            cid,
            left: NIL,
            right: NIL,
            height: 1,
        };
        match self.free.pop() {
            Some(i) => {
                self.nodes[i as usize] = node;
                i
            }
            None => {
                self.nodes.push(node);
                (self.nodes.len() - 1) as u32
            }
        }
    }

    fn cmp_node(&self, key: &[Value], cid: Cid, n: u32, probes: &mut u64) -> Ordering {
        *probes += 1;
        let node = &self.nodes[n as usize];
        key.cmp(&node.key).then(cid.cmp(&node.cid))
    }

    pub fn insert(&mut self, key: Box<[Value]>, cid: Cid, probes: &mut u64) {
        let root = self.root;
        self.root = self.insert_at(root, key, cid, probes);
        self.len += 1;
    }

    fn insert_at(&mut self, n: u32, key: Box<[Value]>, cid: Cid, probes: &mut u64) -> u32 {
        if n == NIL {
            return self.alloc(key, cid);
        }
        match self.cmp_node(&key, cid, n, probes) {
            Ordering::Less => {
                let l = self.nodes[n as usize].left;
                let l = self.insert_at(l, key, cid, probes);
                self.nodes[n as usize].left = l;
            }
            _ => {
                let r = self.nodes[n as usize].right;
                let r = self.insert_at(r, key, cid, probes);
                self.nodes[n as usize].right = r;
            }
        }
        self.rebalance(n)
    }

    /// Removes the entry; returns whether it was present.
    pub fn remove(&mut self, key: &[Value], cid: Cid, probes: &mut u64) -> bool {
        let mut found = false;
        let root = self.root;
        self.root = self.remove_at(root, key, cid, probes, &mut found);
        if found {
            self.len -= 1;
        }
        found
    }

    fn remove_at(&mut self, n: u32, key: &[Value], cid: Cid, probes: &mut u64, found: &mut bool) -> u32 {
        if n == NIL {
            return NIL;
        }
        match self.cmp_node(key, cid, n, probes) {
            Ordering::Less => {
                let l = self.nodes[n as usize].left;
                let l = self.remove_at(l, key, cid, probes, found);
                self.nodes[n as usize].left = l;
            }
            Ordering::Greater => {
                let r = self.nodes[n as usize].right;
                let r = self.remove_at(r, key, cid, probes, found);
                self.nodes[n as usize].right = r;
            }
            Ordering::Equal => {
                *found = true;
                let (l, r) = (self.nodes[n as usize].left, self.nodes[n as usize].right);
                self.free.push(n);
                if l == NIL {
                    return r;
                }
                if r == NIL {
                    return l;
                }
                let (r, min) = self.detach_min(r);
                self.nodes[min as usize].left = l;
                self.nodes[min as usize].right = r;
                return self.rebalance(min);
            }
        }
        self.rebalance(n)
    }

    /// Detaches the leftmost node of the subtree: returns (new subtree, node).
    fn detach_min(&mut self, n: u32) -> (u32, u32) {
        let l = self.nodes[n as usize].left;
        if l == NIL {
            return (self.nodes[n as usize].right, n);
        }
        let (l, min) = self.detach_min(l);
        self.nodes[n as usize].left = l;
        (self.rebalance(n), min)
    }

    /// Constraint numbers whose key starts with `prefix`, in key order.
    pub fn scan_prefix(&self, prefix: &[Value], probes: &mut u64, out: &mut Vec<Cid>) {
        self.scan_at(self.root, prefix, probes, out);
    }

    fn scan_at(&self, n: u32, prefix: &[Value], probes: &mut u64, out: &mut Vec<Cid>) {
        if n == NIL {
            return;
        }
        let node = &self.nodes[n as usize];
        *probes += 1;
        match cmp_prefix(prefix, &node.key) {
            Ordering::Less => self.scan_at(node.left, prefix, probes, out),
            Ordering::Greater => self.scan_at(node.right, prefix, probes, out),
            Ordering::Equal => {
                self.scan_at(node.left, prefix, probes, out);
                out.push(node.cid);
                self.scan_at(node.right, prefix, probes, out);
            }
        }
    }

    /// The first entry in key order whose key starts with `prefix` and that
    /// satisfies `accept`.
    pub fn find_prefix(&self, prefix: &[Value], probes: &mut u64, mut accept: impl FnMut(Cid) -> bool) -> Option<Cid> {
        self.find_at(self.root, prefix, probes, &mut accept)
    }

    fn find_at(&self, n: u32, prefix: &[Value], probes: &mut u64, accept: &mut impl FnMut(Cid) -> bool) -> Option<Cid> {
        if n == NIL {
            return None;
        }
        let node = &self.nodes[n as usize];
        *probes += 1;
        match cmp_prefix(prefix, &node.key) {
            Ordering::Less => self.find_at(node.left, prefix, probes, accept),
            Ordering::Greater => self.find_at(node.right, prefix, probes, accept),
            Ordering::Equal => self
                .find_at(node.left, prefix, probes, accept)
                .or_else(|| accept(node.cid).then_some(node.cid))
                .or_else(|| self.find_at(node.right, prefix, probes, accept)),
        }
    }

    /// All entries in key order.
    pub fn entries(&self) -> Vec<(&[Value], Cid)> {
        let mut out = Vec::with_capacity(self.len);
        let mut stack = Vec::new();
        let mut n = self.root;
        while n != NIL || !stack.is_empty() {
            while n != NIL {
                stack.push(n);
                n = self.nodes[n as usize].left;
            }
            let m = stack.pop().expect("non-empty");
            let node = &self.nodes[m as usize];
            out.push((&node.key[..], node.cid));
            n = node.right;
        }
        out
    }

    /// Checks ordering and AVL balance; returns the height.
    pub fn check(&self) -> Result<u8, String> {
        self.check_at(self.root, None, None)
    }

    fn check_at(&self, n: u32, lo: Option<(&[Value], Cid)>, hi: Option<(&[Value], Cid)>) -> Result<u8, String> {
        if n == NIL {
            return Ok(0);
        }
        let node = &self.nodes[n as usize];
        let me = (&node.key[..], node.cid);
        if lo.is_some_and(|l| l >= me) || hi.is_some_and(|h| h <= me) {
            return Err(format!("order violated at constraint {}", node.cid));
        }
        let hl = self.check_at(node.left, lo, Some(me))?;
        let hr = self.check_at(node.right, Some(me), hi)?;
        if hl.abs_diff(hr) > 1 || node.height != 1 + hl.max(hr) {
            return Err(format!("imbalance at constraint {}", node.cid));
        }
        Ok(node.height)
    }
}
