"""JVM opcode lengths, enough to walk a method body instruction by instruction."""

import struct
from typing import Optional

INVOKEVIRTUAL = 0xB6
INVOKESPECIAL = 0xB7
INVOKESTATIC = 0xB8
INVOKEINTERFACE = 0xB9
INVOKEDYNAMIC = 0xBA

TABLESWITCH = 0xAA
LOOKUPSWITCH = 0xAB
WIDE = 0xC4
IINC = 0x84

_operand_sizes: dict[int, int] = {}


def _ops(first: int, last: int, size: int) -> None:
    """Register opcodes first..last (inclusive) with a fixed operand size."""
    for code in range(first, last + 1):
        _operand_sizes[code] = size


_ops(0x00, 0x0F, 0)  # nop, constants
_ops(0x10, 0x10, 1)  # bipush
_ops(0x11, 0x11, 2)  # sipush
_ops(0x12, 0x12, 1)  # ldc
_ops(0x13, 0x14, 2)  # ldc_w, ldc2_w
_ops(0x15, 0x19, 1)  # iload..aload
_ops(0x1A, 0x35, 0)  # xload_n, xaload
_ops(0x36, 0x3A, 1)  # istore..astore
_ops(0x3B, 0x83, 0)  # xstore_n, xastore, stack ops, arithmetic
_ops(IINC, IINC, 2)
_ops(0x85, 0x98, 0)  # conversions, comparisons
_ops(0x99, 0xA8, 2)  # if*, goto, jsr
_ops(0xA9, 0xA9, 1)  # ret
_ops(0xAC, 0xB1, 0)  # returns
_ops(0xB2, 0xB5, 2)  # get/put field/static
_ops(INVOKEVIRTUAL, INVOKESTATIC, 2)
_ops(INVOKEINTERFACE, INVOKEDYNAMIC, 4)
_ops(0xBB, 0xBB, 2)  # new
_ops(0xBC, 0xBC, 1)  # newarray
_ops(0xBD, 0xBD, 2)  # anewarray
_ops(0xBE, 0xBF, 0)  # arraylength, athrow
_ops(0xC0, 0xC1, 2)  # checkcast, instanceof
_ops(0xC2, 0xC3, 0)  # monitorenter, monitorexit
_ops(0xC5, 0xC5, 3)  # multianewarray
_ops(0xC6, 0xC7, 2)  # ifnull, ifnonnull
_ops(0xC8, 0xC9, 4)  # goto_w, jsr_w

INVOKE_OPCODES = frozenset(
    {INVOKEVIRTUAL, INVOKESPECIAL, INVOKESTATIC, INVOKEINTERFACE, INVOKEDYNAMIC}
)


def instruction_length(code: bytes, offset: int) -> Optional[int]:
    """
    Length in bytes of the instruction starting at ``offset``.

    Args:
        code: Method bytecode
        offset: Offset of the opcode byte

    Returns:
        Instruction length, or None if the opcode is unknown or the
        instruction runs past the end of the code
    """
    opcode = code[offset]

    if opcode in (TABLESWITCH, LOOKUPSWITCH):
        # Operands are 4-byte aligned relative to the start of the code
        pad = (4 - (offset + 1) % 4) % 4
        header = offset + 1 + pad
        if opcode == TABLESWITCH:
            if header + 12 > len(code):
                return None
            low, high = struct.unpack_from(">ii", code, header + 4)
            if high < low:
                return None
            length = 1 + pad + 12 + (high - low + 1) * 4
        else:
            if header + 8 > len(code):
                return None
            (npairs,) = struct.unpack_from(">i", code, header + 4)
            if npairs < 0:
                return None
            length = 1 + pad + 8 + npairs * 8
    elif opcode == WIDE:
        if offset + 1 >= len(code):
            return None
        length = 6 if code[offset + 1] == IINC else 4
    else:
        size = _operand_sizes.get(opcode)
        if size is None:
            return None
        length = 1 + size

    if offset + length > len(code):
        return None
    return length
