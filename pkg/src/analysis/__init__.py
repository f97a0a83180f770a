"""Class hierarchy analysis and the deserialization-aware call graph."""
