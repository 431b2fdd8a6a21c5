use crate::system::OffloadAction;

/// One `(scaled gains, chosen action)` training pair.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub input: Vec<f64>,
    /// 0.0 / 1.0 per device.
    pub label: Vec<f64>,
}

impl Sample {
    pub fn new(input: Vec<f64>, action: &OffloadAction) -> Self {
        let label = action.bits().iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
        Sample { input, label }
    }
}

/// Fixed-capacity ring; once full, each push overwrites the oldest sample.
#[derive(Debug, Clone)]
pub struct ReplayMemory {
    capacity: usize,
    buffer: Vec<Sample>,
    cursor: usize,
}

impl ReplayMemory {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        ReplayMemory {
            capacity,
            buffer: Vec::with_capacity(capacity),
            cursor: 0,
        }
    }

    pub fn push(&mut self, sample: Sample) {
        if self.buffer.len() < self.capacity {
            self.buffer.push(sample);
        } else {
            self.buffer[self.cursor] = sample;
        }
        self.cursor = (self.cursor + 1) % self.capacity;
    }

    pub fn len(&self) -> usize {
        self.buffer.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buffer.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn get(&self, i: usize) -> &Sample {
        &self.buffer[i]
    }

    /// Stored samples in storage order (not insertion order once wrapped).
    pub fn samples(&self) -> &[Sample] {
        &self.buffer
    }
}
