import pytest
import torch
from tokenizers import Tokenizer, decoders, models, pre_tokenizers, trainers
from transformers import BartConfig, BartForConditionalGeneration, PreTrainedTokenizerFast

from errlens_server import Seq2SeqScorer, ServerConfig, create_app

# Small text universe covering the conformance fixture sentences.
CORPUS = [
    "The cat sat on the mat.",
    "A cat sat on a mat.",
    "The dog slept.",
    "A dog sat on the mat in summary.",
    "The cat is on a mat.",
]


def build_tokenizer() -> PreTrainedTokenizerFast:
    tok = Tokenizer(models.BPE(unk_token="<unk>"))
    tok.pre_tokenizer = pre_tokenizers.ByteLevel(add_prefix_space=False)
    tok.decoder = decoders.ByteLevel()
    trainer = trainers.BpeTrainer(
        vocab_size=500,
        special_tokens=["<s>", "<pad>", "</s>", "<unk>"],
        initial_alphabet=pre_tokenizers.ByteLevel.alphabet(),
    )
    tok.train_from_iterator(CORPUS, trainer)
    return PreTrainedTokenizerFast(
        tokenizer_object=tok,
        bos_token="<s>",
        pad_token="<pad>",
        eos_token="</s>",
        unk_token="<unk>",
    )


def build_model(vocab_size: int) -> BartForConditionalGeneration:
    torch.manual_seed(0)
    config = BartConfig(
        vocab_size=vocab_size,
        d_model=32,
        encoder_layers=1,
        decoder_layers=1,
        encoder_attention_heads=2,
        decoder_attention_heads=2,
        encoder_ffn_dim=64,
        decoder_ffn_dim=64,
        max_position_embeddings=128,
        pad_token_id=1,
        bos_token_id=0,
        eos_token_id=2,
        decoder_start_token_id=2,
        forced_eos_token_id=None,
    )
    return BartForConditionalGeneration(config)


@pytest.fixture(scope="session")
def scorer() -> Seq2SeqScorer:
    tokenizer = build_tokenizer()
    model = build_model(tokenizer.vocab_size)
    return Seq2SeqScorer(model, tokenizer, model_id="tiny-random-seq2seq")


@pytest.fixture(scope="session")
def server_config() -> ServerConfig:
    return ServerConfig(model_id="tiny-random-seq2seq", max_batch=4)


@pytest.fixture(scope="session")
def app(scorer, server_config):
    return create_app(scorer, server_config)
