"""Maltsev conditions: deciders, chain conversions and directed-chain certificates."""
