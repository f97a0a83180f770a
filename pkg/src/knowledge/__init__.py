"""Source and sink knowledge base."""
