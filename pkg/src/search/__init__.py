"""Gadget-chain enumeration over the call graph."""
