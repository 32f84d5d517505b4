// SPDX-License-Identifier: Apache-2.0

// C API implementation lands here; see include/srnn/srnn.h.
