from .schemas import PrecodingMatrix, TransmissionBlock
from .service import alignment_ratio, block_size, build_block, verify_alignment, verify_decodability
from .router import router
