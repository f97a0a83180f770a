"""deserchain: deserialization gadget-chain miner for JVM bytecode"""

__version__ = "0.1.0"
